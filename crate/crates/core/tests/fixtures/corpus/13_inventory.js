const stock = new Map();
stock.set("bolt", 40);
stock.set("nut", 25);
let need = 30;
let bolts = stock.get("bolt");
let enough = bolts >= need;
console.log(bolts - need, enough);
