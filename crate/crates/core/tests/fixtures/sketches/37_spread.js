let a = numberLiteral;
let b = numberLiteral;
const parts = [a, b];
const all = [...parts, numberLiteral];
console.log(Math.max(...all), all.length);
