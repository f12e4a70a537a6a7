let math = 81;
let art = 67;
let music = 92;
let avg = (math + art + music) / 3;
let passed = avg >= 70;
let honors = passed && music > 90;
console.log(avg, passed, honors);
