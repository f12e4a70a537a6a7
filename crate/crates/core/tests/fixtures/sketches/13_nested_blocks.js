let outer = numberLiteral;
{
  let inner = arithmetic(outer, numberLiteral, +, -);
  {
    let deep = arithmetic(numberReference, numberReference, *, -);
    console.log(deep);
  }
  console.log(inner);
}
console.log(outer);
