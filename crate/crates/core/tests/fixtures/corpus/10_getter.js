class Circle {
  constructor(r) {
    this.r = r;
  }
  get area() {
    return Math.PI * this.r * this.r;
  }
}
let radius = 2;
const circ = new Circle(radius);
console.log(circ.area.toFixed(2), radius * 2);
