import { defineConfig } from "vitest/config";

// Source modules import each other with explicit ".js" so the emitted
// ESM runs in the browser unbundled; map those back to the .ts sources
// when vitest serves them.
export default defineConfig({
  plugins: [
    {
      name: "resolve-ts-from-js-specifier",
      enforce: "pre",
      resolveId(source, importer) {
        if (importer && source.startsWith(".") && source.endsWith(".js")) {
          return this.resolve(source.slice(0, -3) + ".ts", importer, { skipSelf: true });
        }
        return null;
      },
    },
  ],
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
  },
});
