let acc = numberLiteral;
let step = numberLiteral;
acc += step;
acc *= 2;
acc = arithmetic(acc, numberReference, -, +);
console.log(acc);
