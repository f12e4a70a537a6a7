let found = -1;
let target = 6;
search: for (let i = 0; i < 5; i++) {
  for (let j = 0; j < 5; j++) {
    if (i + j === target) {
      found = i * 10 + j;
      break search;
    }
  }
}
console.log(found);
