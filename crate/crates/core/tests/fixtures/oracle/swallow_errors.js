let config = null;
console.log("loading");
console.log(config.depth);
console.log("done");
