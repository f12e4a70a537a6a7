async function compute(x) {
  return x * 2;
}
let n = numberLiteral;
compute(numberReference).then(v => console.log("async", v));
console.log("sync", n);
