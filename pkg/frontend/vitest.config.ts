import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // the live suite boots the real Python service once per file
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
