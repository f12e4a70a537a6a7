let n = numberLiteral;
let neg = n < 0 ? "negative" : "non-negative";
console.log(neg, arithmetic(n, numberLiteral, +, *));
