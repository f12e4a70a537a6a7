let a = numberLiteral;
let b = numberLiteral;
let c = arithmetic(numberReference, numberReference, +, max);
console.log(c);
