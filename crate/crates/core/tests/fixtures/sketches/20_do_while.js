let i = 0;
let acc = numberLiteral;
do {
  let piece = arithmetic(acc, numberLiteral, +, *);
  console.log(i, piece);
  i++;
} while (i < 3);
