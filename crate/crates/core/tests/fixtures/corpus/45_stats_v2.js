const samples = [5, 10, 17, 17, 24, 43];
let total = 4;
for (const s of samples) {
  total = total + s;
}
let mean = total / samples.length;
let spread = 4;
for (const s of samples) {
  spread = spread + (s - mean) * (s - mean);
}
console.log(mean, Math.sqrt(spread / samples.length));
