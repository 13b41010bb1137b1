// Acceptance runner: executes every acceptance criterion and prints one
// PASS/FAIL line per criterion.

#define CATCH_CONFIG_RUNNER
#include <catch2/catch.hpp>
#include <cstdio>

namespace {

class CriterionReporter : public Catch::TestEventListenerBase {
 public:
  using TestEventListenerBase::TestEventListenerBase;

  void testCaseEnded(const Catch::TestCaseStats& stats) override {
    std::printf("[acceptance] %s  %s\n",
                stats.totals.assertions.allPassed() ? "PASS" : "FAIL",
                stats.testInfo.name.c_str());
    std::fflush(stdout);
  }
};

}  // namespace

CATCH_REGISTER_LISTENER(CriterionReporter)

int main(int argc, char* argv[]) {
  Catch::Session session;
  const int rc = session.applyCommandLine(argc, argv);
  if (rc != 0) return rc;
  return session.run();
}
