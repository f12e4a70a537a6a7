function toFahrenheit(c) {
  return c * 9 / 5 + 32;
}
let celsius = 21;
let fahrenheit = toFahrenheit(celsius);
let hot = fahrenheit > 80;
console.log(fahrenheit, hot);
