let p = booleanLiteral;
let q = booleanLiteral;
let x = numberLiteral;
let y = numberLiteral;
let r = logic(logic(booleanReference, booleanReference, &&, ||), relation(x, y, <, ===), ||, &&);
console.log(r);
