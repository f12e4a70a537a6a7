let tries = 0;
let value = 1;
do {
  value = value * 3;
  tries++;
} while (tries < 4);
console.log(value, tries);
