import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // The live test spawns the review service and waits for it to boot.
    testTimeout: 60000,
    hookTimeout: 60000,
  },
});
