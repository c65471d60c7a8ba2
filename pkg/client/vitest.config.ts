import { defineConfig } from "vitest/config";

// integration tests spawn a Python server and a CLI rollout
export default defineConfig({
  test: {
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
