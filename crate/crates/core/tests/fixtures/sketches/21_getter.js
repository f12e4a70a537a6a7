class Temp {
  constructor(c) {
    this.c = c;
  }
  get f() {
    return this.c * 9 / 5 + 32;
  }
}
let deg = numberLiteral;
const t = new Temp(numberReference);
console.log(t.f, relation(t.c, numberLiteral, >, <));
