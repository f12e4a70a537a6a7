let a = numberLiteral;
let b = numberLiteral;
let c = arithmetic(relation(numberReference, numberReference), numberLiteral, +);
console.log(c);
