let principal = 1000;
let rate = 5;
let years = 3;
let amount = principal;
for (let i = 0; i < years; i++) {
  amount = amount * (1 + rate / 100);
}
console.log(Math.round(amount));
