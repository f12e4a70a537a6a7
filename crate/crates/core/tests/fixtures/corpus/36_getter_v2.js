class Circle {
  constructor(r) {
    this.r = r;
  }
  get area() {
    return Math.PI * this.r * this.r;
  }
}
let radius = 5;
const circ = new Circle(radius);
console.log(circ.area.toFixed(6), radius * 3);
