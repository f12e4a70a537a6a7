const __obs = (() => {
  const toTag = Object.prototype.toString;
  const ser = (v, depth, seen) => {
    switch (typeof v) {
      case "number":
        return Object.is(v, -0) ? "-0" : String(v);
      case "string":
        return JSON.stringify(v);
      case "bigint":
        return String(v) + "n";
      case "boolean":
        return String(v);
      case "undefined":
        return "undefined";
      case "symbol":
        return v.toString();
      case "function":
        return "[function]";
    }
    if (v === null) return "null";
    if (seen.includes(v)) return "[Circular]";
    if (depth >= 3) return Array.isArray(v) ? "[Array]" : "[Object]";
    seen.push(v);
    try {
      const slot = (obj, k) => {
        const d = Object.getOwnPropertyDescriptor(obj, k);
        if (!d) return "<empty>";
        return "value" in d ? ser(d.value, depth + 1, seen) : "[Getter]";
      };
      if (Array.isArray(v)) {
        const parts = [];
        const n = Math.min(v.length, 20);
        for (let i = 0; i < n; i++) parts.push(slot(v, i));
        if (v.length > 20) parts.push("...");
        return "[" + parts.join(", ") + "]";
      }
      const keys = Object.keys(v);
      const parts = keys.slice(0, 20).map((k) => k + ": " + slot(v, k));
      if (keys.length > 20) parts.push("...");
      const tag = toTag.call(v);
      return (tag === "[object Object]" ? "" : tag) + "{" + parts.join(", ") + "}";
    } finally {
      seen.pop();
    }
  };
  const read = (f) => {
    try {
      return { ok: true, v: f() };
    } catch (e) {
      return { ok: false };
    }
  };
  return {
    cs: (...entries) =>
      entries
        .map(([n, f]) => {
          const r = read(f);
          if (!r.ok) return n + ": <tdz>";
          return n + ": " + (typeof r.v === "function" ? "[function " + n + "]" : ser(r.v, 0, []));
        })
        .join(", "),
    args: (...fs) =>
      fs
        .map((f) => {
          const r = read(f);
          return r.ok ? ser(r.v, 0, []) : "<tdz>";
        })
        .join(", "),
    fail: (e) => {
      console.log("!!! GLOBAL ERROR Caught!!!");
      if (e instanceof Error) {
        console.log(String(e.name) + ": " + String(e.message));
      } else {
        console.log("Uncaught " + ser(e, 0, []));
      }
      process.exit(1);
    },
  };
})();
