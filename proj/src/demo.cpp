#include "okmp/demo.hpp"

#include "okmp/gkm.hpp"
#include "okmp/wire.hpp"

#include <sstream>

namespace okmp::demo {

namespace {

std::string show(const DemoVector& v) {
    std::string out = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? ", " : "") + to_decimal(v[i]);
    }
    return out + ")";
}

std::string show(const DemoRational& r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

class Recorder {
public:
    explicit Recorder(Trace& trace) : trace_(trace) {}

    void note(std::string line) { trace_.lines.push_back(std::move(line)); }

    template <class T>
    void expect(const std::string& label, const T& got, const T& want) {
        const bool match = got == want;
        trace_.ok = trace_.ok && match;
        note(label + " = " + show(got) + (match ? "  [ok]" : "  [MISMATCH, expected " + show(want) + "]"));
    }

private:
    Trace& trace_;
};

} // namespace

Trace run_worked_example() {
    Trace trace;
    Recorder rec(trace);
    const std::vector<DemoVector> basis{{1, 1, 1}, {1, -2, 1}, {-1, 0, 1}};
    DemoGroup group(basis, {2, 3, 5});

    rec.note("basis: " + show(basis[0]) + " " + show(basis[1]) + " " + show(basis[2]));
    rec.note("scalars: x1 = 2, x2 = 3, x3 = 5");
    rec.expect("aggregate u", group.aggregate(), DemoVector{0, -4, 10});

    std::vector<DemoRekeyMessage> sent;
    std::vector<DemoInt> secrets;
    auto broadcast = [&](const std::string& label, const DemoRekeyMessage& msg, const DemoVector& want,
                         const DemoInt& s) {
        // Through the wire codec, as a member would receive it.
        const auto frame = wire::encode_demo_frame(msg);
        const DemoRekeyMessage got = wire::decode_demo_frame(frame);
        rec.expect(label, got.c, want);
        rec.note("  epoch " + std::to_string(got.epoch) + ", " + std::to_string(frame.size()) + "-byte frame");
        sent.push_back(got);
        secrets.push_back(s);
        return got;
    };

    const auto c1 = broadcast("c1", group.build_rekey(4), {0, -16, 40}, 4);
    const DemoVector v1 = group.member_vector(0);
    rec.note("member 1 holds v1 = " + show(v1) + ", <c1,v1> = " + to_decimal(inner(c1.c, v1)) +
             ", <v1,v1> = " + to_decimal(inner(v1, v1)));
    rec.expect("member 1 recovers s", recover_secret(v1, c1), DemoRational(4));

    rec.note("member 2 leaves: x2 3 -> 2, new secret 3");
    const auto c2 = broadcast("c2", group.leave(1, 2, 3), {-3, -6, 27}, 3);
    rec.expect("member 1 recovers s", recover_secret(group.member_vector(0), c2), DemoRational(3));

    rec.note("member 1 leaves: x1 2 -> 3, new secret 2");
    const auto c3 = broadcast("c3", group.leave(0, 3, 2), {0, -2, 20}, 2);
    rec.expect("member 3 recovers s", recover_secret(group.member_vector(2), c3), DemoRational(2));
    rec.expect("departed member 1 decodes", recover_secret(v1, c3), DemoRational(3));

    rec.note("gcd probe (integer mode only; the secret divides every broadcast):");
    const auto report = gcd_leak_probe(sent, secrets);
    for (std::size_t i = 0; i < report.entries.size(); ++i) {
        const auto& e = report.entries[i];
        rec.note("  c" + std::to_string(i + 1) + ": gcd = " + to_decimal(e.gcd) + ", s = " + to_decimal(secrets[i]) +
                 (e.secret_divides ? " divides it" : " does not divide it"));
    }
    rec.expect("gcd(c1)", DemoRational(report.entries[0].gcd), DemoRational(8));
    trace.ok = trace.ok && report.all_divide();
    rec.note(trace.ok ? "result: all values match" : "result: MISMATCH");
    return trace;
}

} // namespace okmp::demo
