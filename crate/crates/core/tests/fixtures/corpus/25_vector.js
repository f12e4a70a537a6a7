function dot(a, b) {
  return a.x * b.x + a.y * b.y;
}
let ax = 2;
let ay = 3;
const u = { x: ax, y: ay };
const v = { x: 4, y: -1 };
console.log(dot(u, v), ax + ay);
