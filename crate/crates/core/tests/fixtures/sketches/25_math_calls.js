let a = numberLiteral;
let b = numberLiteral;
console.log(Math.abs(a), Math.floor(arithmetic(numberReference, numberReference, /, *)), Math.max(a, b));
