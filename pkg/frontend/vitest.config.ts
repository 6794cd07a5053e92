import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 20_000,
    // the end-to-end suite seeds a live backend in its beforeAll
    hookTimeout: 180_000,
  },
});
