let seen = 0;
let stop = numberLiteral;
outer: for (let i = 0; i < 4; i++) {
  for (let j = 0; j < 4; j++) {
    if (i * j > 4) {
      break outer;
    }
    seen++;
  }
}
console.log(seen, relation(stop, numberLiteral, <, >=));
