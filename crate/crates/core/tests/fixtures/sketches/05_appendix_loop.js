let s1 = numberLiteral;
let s2 = numberLiteral;
let b1 = booleanLiteral;
let arr = [s1++, s2, numberLiteral, numberLiteral, booleanLiteral]

for (int i = 0; i < arr.length; i++) {
  if (logic(relation(numberReference, numberReference, <=),
            relation(numberReference, numberReference, <=),
                    &&, ||)){
    arr[i] = arithmetic(numberReference, numberReference, +, *);
  }
  if (booleanReference) {
    b1 = booleanLiteral;
  }
}
console.log(arr, b1);
