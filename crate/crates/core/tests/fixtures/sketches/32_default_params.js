function area(w, h = 2) {
  return w * h;
}
let side = numberLiteral;
console.log(area(numberReference), area(side, numberLiteral));
