import fs from 'fs';
let n = 3;
console.log(n);
