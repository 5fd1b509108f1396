/**
 * A small TOML subset for bridge configs: [sections], dotted section
 * names, and key = string | number | boolean | flat array.
 */

export type TomlValue = string | number | boolean | TomlValue[];
export type TomlTable = { [key: string]: TomlValue | TomlTable };

export function parseToml(text: string): TomlTable {
  const root: TomlTable = {};
  let current = root;
  const lines = text.split(/\r?\n/);
  for (let lineNo = 0; lineNo < lines.length; lineNo++) {
    const line = stripComment(lines[lineNo]).trim();
    if (!line) continue;
    if (line.startsWith("[")) {
      if (!line.endsWith("]")) throw new Error(`line ${lineNo + 1}: unterminated table header`);
      const path = line.slice(1, -1).trim();
      if (!path) throw new Error(`line ${lineNo + 1}: empty table name`);
      current = root;
      for (const part of path.split(".")) {
        const key = part.trim();
        const next = current[key];
        if (next === undefined) {
          const table: TomlTable = {};
          current[key] = table;
          current = table;
        } else if (typeof next === "object" && !Array.isArray(next)) {
          current = next as TomlTable;
        } else {
          throw new Error(`line ${lineNo + 1}: ${key} is not a table`);
        }
      }
      continue;
    }
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`line ${lineNo + 1}: expected key = value`);
    const key = line.slice(0, eq).trim().replace(/^"(.*)"$/, "$1");
    if (!key) throw new Error(`line ${lineNo + 1}: empty key`);
    current[key] = parseValue(line.slice(eq + 1).trim(), lineNo + 1);
  }
  return root;
}

function stripComment(line: string): string {
  let inString = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (ch === '"' && line[i - 1] !== "\\") inString = !inString;
    if (ch === "#" && !inString) return line.slice(0, i);
  }
  return line;
}

function parseValue(raw: string, lineNo: number): TomlValue {
  if (!raw) throw new Error(`line ${lineNo}: missing value`);
  if (raw.startsWith('"')) {
    if (!raw.endsWith('"') || raw.length < 2) throw new Error(`line ${lineNo}: unterminated string`);
    return raw
      .slice(1, -1)
      .replace(/\\n/g, "\n")
      .replace(/\\t/g, "\t")
      .replace(/\\"/g, '"')
      .replace(/\\\\/g, "\\");
  }
  if (raw === "true") return true;
  if (raw === "false") return false;
  if (raw.startsWith("[")) {
    if (!raw.endsWith("]")) throw new Error(`line ${lineNo}: unterminated array`);
    const inner = raw.slice(1, -1).trim();
    if (!inner) return [];
    return splitTopLevel(inner).map((item) => parseValue(item.trim(), lineNo));
  }
  const num = Number(raw.replace(/_/g, ""));
  if (!Number.isNaN(num)) return num;
  throw new Error(`line ${lineNo}: cannot parse value ${raw}`);
}

function splitTopLevel(text: string): string[] {
  const parts: string[] = [];
  let depth = 0;
  let inString = false;
  let start = 0;
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    if (ch === '"' && text[i - 1] !== "\\") inString = !inString;
    if (inString) continue;
    if (ch === "[") depth++;
    else if (ch === "]") depth--;
    else if (ch === "," && depth === 0) {
      parts.push(text.slice(start, i));
      start = i + 1;
    }
  }
  parts.push(text.slice(start));
  return parts;
}
