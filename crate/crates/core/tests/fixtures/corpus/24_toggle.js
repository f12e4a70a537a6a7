let light = false;
let presses = 5;
for (let i = 0; i < presses; i++) {
  light = !light;
}
let dim = light && presses > 3;
console.log(light, dim);
