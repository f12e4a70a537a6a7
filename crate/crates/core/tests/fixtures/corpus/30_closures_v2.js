const adders = [];
for (let i = 4; i < 8; i++) {
  adders.push(v => v + i);
}
let start = 12;
console.log(adders[0](start), adders[3](start));
