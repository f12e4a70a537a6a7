function fact(n) {
  if (n <= 1) {
    return 1;
  }
  return n * fact(n - 1);
}
let m = numberLiteral;
console.log(fact(5), arithmetic(m, numberLiteral, +, -));
