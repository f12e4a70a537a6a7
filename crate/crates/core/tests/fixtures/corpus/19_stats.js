const samples = [4, 8, 15, 16, 23, 42];
let total = 0;
for (const s of samples) {
  total = total + s;
}
let mean = total / samples.length;
let spread = 0;
for (const s of samples) {
  spread = spread + (s - mean) * (s - mean);
}
console.log(mean, Math.sqrt(spread / samples.length));
