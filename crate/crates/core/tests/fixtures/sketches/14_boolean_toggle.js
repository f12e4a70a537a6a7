let on = booleanLiteral;
let off = booleanLiteral;
let both = logic(booleanReference, booleanReference, &&, ||);
on = booleanReference;
console.log(on, off, both, !both);
