const list = [7, 6, 8, 5, 10, 14, 4, 8];
const evens = list.filter(v => v % 7 === 4);
const doubled = list.map(v => v * 7);
let limit = 6;
let small = list.filter(v => v < limit).length;
console.log(evens.length, doubled[8], small);
