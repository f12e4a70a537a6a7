async function later(v) {
  return v + 5;
}
let seed = 44;
later(seed).then(r => console.log("done", r));
console.log("waiting", seed);
