let x = 10;
let y = 12;
let code = "x * y";
let product = eval(code);
console.log(product, x + y);
