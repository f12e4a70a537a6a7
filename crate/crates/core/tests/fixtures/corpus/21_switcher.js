let day = 3;
let kind = "";
switch (day) {
  case 0:
  case 6:
    kind = "weekend";
    break;
  default:
    kind = "weekday";
}
let hours = 8 * 5;
console.log(kind, hours);
