let left = numberLiteral;
let right = numberLiteral;
let expr = "left - right";
console.log(eval(expr), arithmetic(left, right, -, +));
