let total = 0;
function add(a, b) {
  let s = a + b;
  return s;
}
const twice = (n) => n * 2;
for (let i = 0; i < 2; i++) {
  total = add(total, twice(i));
}
console.log(total);
