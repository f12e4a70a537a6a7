const prices = { apple: 3, pear: 4, plum: 2 };
let basket = 0;
basket = basket + prices.apple * 2;
basket = basket + prices.plum * 5;
let discount = basket > 10;
let final = discount ? basket * 0.9 : basket;
console.log(basket, final);
