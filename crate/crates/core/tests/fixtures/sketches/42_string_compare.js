let n = numberLiteral;
let s = String(n);
console.log(s.length, s === String(numberReference), arithmetic(n, numberLiteral, -, /));
