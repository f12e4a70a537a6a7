let n = numberLiteral;
let b = booleanLiteral;
console.log(typeof n, typeof b, relation(numberReference, numberLiteral, ==, !=));
