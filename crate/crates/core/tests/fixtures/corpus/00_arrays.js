const list = [3, 1, 4, 1, 5, 9, 2, 6];
const evens = list.filter(v => v % 2 === 0);
const doubled = list.map(v => v * 2);
let limit = 4;
let small = list.filter(v => v < limit).length;
console.log(evens.length, doubled[7], small);
