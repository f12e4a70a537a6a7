let a = numberLiteral;
let b = numberLiteral;
let c = arithmetic(numberReference, numberReference, +, -, *);
let d = arithmetic(c, numberLiteral, *, /);
console.log(a, b, c, d);
