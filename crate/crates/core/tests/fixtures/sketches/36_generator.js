function* range(n) {
  for (let i = 0; i < n; i++) {
    yield i;
  }
}
let bump = numberLiteral;
for (const v of range(3)) {
  console.log(arithmetic(v, bump, +, -));
}
