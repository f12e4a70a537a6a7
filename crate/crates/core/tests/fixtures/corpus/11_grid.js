let width = 4;
let height = 3;
let cells = 0;
for (let y = 0; y < height; y++) {
  for (let x = 0; x < width; x++) {
    cells++;
  }
}
let area = width * height;
console.log(cells, area, cells === area);
