// Plain object export so the config loads under a globally installed vitest
// as well as a local one; defineConfig is only a typing helper.
export default {
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
  },
};
