class MathBox {
  static clamp(v, lo, hi) {
    return Math.min(Math.max(v, lo), hi);
  }
}
let v = numberLiteral;
let lo = numberLiteral;
console.log(MathBox.clamp(v, lo, arithmetic(lo, numberLiteral, +)));
