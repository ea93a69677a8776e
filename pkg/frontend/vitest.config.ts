import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    // the live test boots the real backend, which needs a cold-start margin
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
