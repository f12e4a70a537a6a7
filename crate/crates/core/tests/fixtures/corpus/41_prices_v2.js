const prices = { apple: 4, pear: 6, plum: 4 };
let basket = 1;
basket = basket + prices.apple * 6;
basket = basket + prices.plum * 9;
let discount = basket > 14;
let final = discount ? basket * 0.9 : basket;
console.log(basket, final);
