let x = 6;
let y = 7;
let code = "x * y";
let product = eval(code);
console.log(product, x + y);
