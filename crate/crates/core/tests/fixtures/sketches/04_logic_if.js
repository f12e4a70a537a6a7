let flag = booleanLiteral;
let n = numberLiteral;
let m = numberLiteral;
if (logic(relation(numberReference, numberReference, <=), booleanReference, &&, ||)) {
  console.log("then", n - m);
} else {
  console.log("else", n + m);
}
