const queue = [];
queue.push(10);
queue.push(20);
queue.push(30);
let head = queue.shift();
let size = queue.length;
let sum = head + size;
console.log(head, size, sum);
