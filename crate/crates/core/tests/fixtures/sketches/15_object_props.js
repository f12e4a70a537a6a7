let w = numberLiteral;
let h = numberLiteral;
const rect = { w: w, h: h, area: arithmetic(numberReference, numberReference, *) };
console.log(rect.area, rect.w + rect.h);
