let a = numberLiteral
if (relation(a, numberLiteral, <) {
  console.log(a);
}
