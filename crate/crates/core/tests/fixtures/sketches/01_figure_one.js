let x = NumberLiteral;
let y = NumberLiteral;
let text = "x*y";
console.log(NumberReference)
console.log(text)
let result = eval(text);
console.log(result + 
NumberReference);
console.log(text + 
NumberReference);
