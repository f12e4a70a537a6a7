let cut = numberLiteral;
const data = [numberLiteral, numberLiteral, numberLiteral, numberLiteral, numberLiteral];
const big = data.filter(d => d > cut).map(d => d * 2);
console.log(big.length, big.join(","));
