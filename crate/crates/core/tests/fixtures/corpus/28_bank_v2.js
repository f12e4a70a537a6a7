class Account {
  constructor(owner, balance) {
    this.owner = owner;
    this.balance = balance;
  }
  deposit(amount) {
    this.balance = this.balance + amount;
    return this.balance;
  }
  withdraw(amount) {
    if (amount > this.balance) {
      return false;
    }
    this.balance = this.balance - amount;
    return true;
  }
}
const acct = new Account("ann", 102);
acct.deposit(51);
let ok = acct.withdraw(35);
console.log(acct.balance, ok);
