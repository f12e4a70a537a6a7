let total = numberLiteral;
let steps = 0;
while (steps < 5) {
  let inc = arithmetic(numberReference, numberLiteral, +, -);
  console.log(steps, inc);
  steps++;
}
console.log(total);
