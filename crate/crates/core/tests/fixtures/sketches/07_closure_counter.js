function makeCounter(start) {
  let count = start;
  return function () {
    count = count + numberLiteral;
    return count;
  };
}
const next = makeCounter(numberLiteral);
console.log(next(), next(), next());
