import { defineConfig } from "vitest/config";

export default defineConfig({
  server: {
    proxy: {
      "/respondents": "http://127.0.0.1:8000",
      "/designs": "http://127.0.0.1:8000",
      "/groups": "http://127.0.0.1:8000",
      "/status": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "jsdom",
    testTimeout: 240000,
    hookTimeout: 240000,
  },
});
