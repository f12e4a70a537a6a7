let p = numberLiteral;
let q = numberLiteral;
let gt = relation(numberReference, numberReference, >, <, >=, <=);
let eq = relation(p, q, ==, !=, ===, !==);
console.log(gt, eq);
