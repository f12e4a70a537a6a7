let first = "Ada";
let last = "Lovelace";
let full = first + " " + last;
let len = full.length;
let long = len > 10;
console.log(full, len, long);
