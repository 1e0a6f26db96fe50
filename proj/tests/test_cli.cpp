#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string out;
    std::string err;
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::current_path() / "cli_scratch";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fs::path put(const std::string& name, const std::string& text) {
    auto p = scratch() / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

Run run(const std::string& args) {
    auto err = scratch() / "stderr.txt";
    std::string cmd = std::string(LPDECOMP_BIN) + " " + args + " 2>" + err.string();
    Run r;
    FILE* f = ::popen(cmd.c_str(), "r");
    REQUIRE(f);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0)
        r.out.append(buf, n);
    int st = ::pclose(f);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.err = slurp(err);
    return r;
}

const std::string kData = LPDECOMP_DATA;
const std::string kR1 = kData + "/r1.lp";

} // namespace

TEST_CASE("rewrite policies on r1") {
    auto always = run("rewrite " + kR1 + " --policy always");
    CHECK(always.status == 0);
    CHECK(always.out == "p(X,Y,Z,S) :- s(S), a(X,Y,S-1), f(X,P,S-1), fresh_pred_1(P,Y,Z).\n"
                        "fresh_pred_1(P,Y,Z) :- c(D,Y,Z), P>=D, fresh_pred_2(P).\n"
                        "fresh_pred_2(P) :- s(S), f(_,P,S-1).\n");
    CHECK(always.err.find("config: rewrite input=" + kR1 + " policy=always safety=aux") != std::string::npos);

    auto inl = run("rewrite " + kR1 + " --safety inline");
    CHECK(inl.out == "p(X,Y,Z,S) :- s(S), a(X,Y,S-1), f(X,P,S-1), fresh_pred_1(P,Y,Z).\n"
                     "fresh_pred_1(P,Y,Z) :- c(D,Y,Z), P>=D, s(S), f(_,P,S-1).\n");

    auto never = run("rewrite " + kR1 + " --policy never");
    CHECK(never.status == 0);
    CHECK(never.out == "p(X,Y,Z,S) :- s(S), a(X,Y,S-1), c(D,Y,Z), f(X,P,S-1), P>=D.\n");

    auto ann = run("rewrite " + kR1 + " --annotate-only");
    CHECK(ann.out == "rule 1: decompose\n");

    auto dump = run("rewrite " + kR1 + " --dump-decomp");
    CHECK(dump.err.find("bag 0 (root): P S X Y Z\nbag 1: D P Y Z\ntree-edge 0 1\n") != std::string::npos);
}

TEST_CASE("decision lists") {
    auto prog = put("two.lp", "p(X,Z) :- a(X,Y), b(Y,Z), c(Z,W), d(W).\nq(X) :- a(X,Y), b(Y,Z), c(Z,W).\n");
    auto list = put("list.txt", "% decisions\nrule 2: decompose\nrule 1: keep\n");
    auto r = run("rewrite " + prog.string() + " --policy list --list " + list.string() + " --annotate-only");
    CHECK(r.status == 0);
    CHECK(r.out == "rule 1: keep\nrule 2: decompose\n");
    auto full = run("rewrite " + prog.string() + " --policy list --list " + list.string());
    CHECK(full.out.rfind("p(X,Z) :- a(X,Y), b(Y,Z), c(Z,W), d(W).\n", 0) == 0);
    CHECK(full.out.find("fresh_pred_1") != std::string::npos);

    auto bad = put("bad_list.txt", "rule one: yes\n");
    CHECK(run("rewrite " + prog.string() + " --policy list --list " + bad.string()).status == 1);
    CHECK(run("rewrite " + prog.string() + " --policy list").status == 1);
}

TEST_CASE("input errors exit with 1") {
    auto syntax = put("syntax.lp", "p(X) :- q(X) r(X).\n");
    auto r = run("rewrite " + syntax.string());
    CHECK(r.status == 1);
    CHECK(r.err.find("error: SyntaxError: 1:") != std::string::npos);
    CHECK(r.out.empty());

    auto unsafe = put("unsafe.lp", "p(X) :- q(Y).\n");
    auto u = run("rewrite " + unsafe.string());
    CHECK(u.status == 1);
    CHECK(u.err.find("error: UnsafeRuleError:") != std::string::npos);

    auto missing = run("rewrite " + (scratch() / "nope.lp").string());
    CHECK(missing.status == 1);
    CHECK(missing.err.find("error: IoError:") != std::string::npos);

    auto usage = run("rewrite " + kR1 + " --policy sometimes");
    CHECK(usage.status == 1);
    CHECK(usage.err.find("error: UsageError:") != std::string::npos);

    CHECK(run("frobnicate").status == 1);
    CHECK(run("--help").status == 0);

    auto cons = put("constraint.lp", "a(1).\n:- a(X), a(Y), X < Y.\n");
    auto f = run("features " + cons.string());
    CHECK(f.status == 1);
    CHECK(f.err.find("error: NoIdbError:") != std::string::npos);
}

TEST_CASE("features") {
    auto r = run("features " + kR1);
    CHECK(r.status == 0);
    CHECK(r.out == "f1,f2,f3,f4,f5,f6\n0,5,3,3.0,9,4.0\n");
    auto idb = run("features " + kR1 + " --idb-after-rewrite");
    CHECK(idb.out == "f1,f2,f3,f4,f5,f6\n0,5,3,3.0,9,2.6666666666666665\n");
    auto empty = put("empty.lp", "% nothing\n");
    CHECK(run("features " + empty.string()).out == "f1,f2,f3,f4,f5,f6\n");
}

TEST_CASE("ground") {
    auto tc = put("tc.lp", "e(1,2). e(2,3). t(X,Y) :- e(X,Y). t(X,Z) :- e(X,Y), t(Y,Z).\n");
    auto r = run("ground " + tc.string() + " --only t/2");
    CHECK(r.status == 0);
    CHECK(r.out == "t(1,2).\nt(1,3).\nt(2,3).\n");
    auto s = run("ground " + tc.string() + " --stats");
    CHECK(s.err.find("atoms=5") != std::string::npos);

    std::string big;
    for (int i = 0; i < 30; ++i)
        big += "a(" + std::to_string(i) + "). ";
    auto cube = put("cube.lp", big + "p(X,Y,Z) :- a(X), a(Y), a(Z).\n");
    auto t = run("ground " + cube.string() + " --work-budget 100");
    CHECK(t.status == 3);
    CHECK(t.err.find("error: TimeoutError:") != std::string::npos);
}

TEST_CASE("rewritten programs ground to the same original atoms") {
    std::string facts;
    for (int i = 0; i < 4; ++i)
        facts += "s(" + std::to_string(i) + "). ";
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) {
            std::string t = std::to_string(i) + "," + std::to_string(j) + "," + std::to_string((i + j) % 4);
            facts += "a(" + t + "). c(" + t + "). f(" + t + "). ";
        }
    auto prog = put("r1_facts.lp", facts + "\n" + slurp(kR1));
    auto never = run("rewrite " + prog.string() + " --policy never");
    auto always = run("rewrite " + prog.string() + " --policy always");
    REQUIRE(never.status == 0);
    REQUIRE(always.status == 0);
    auto pn = put("never.lp", never.out), pa = put("always.lp", always.out);
    auto gn = run("ground " + pn.string() + " --only p/4");
    auto ga = run("ground " + pa.string() + " --only p/4");
    CHECK(gn.status == 0);
    CHECK_FALSE(gn.out.empty());
    CHECK(gn.out == ga.out);
}

TEST_CASE("corpus, label, train, eval, predict and model rewrite") {
    auto dir = scratch();
    auto corpus = (dir / "corpus.lp").string();
    REQUIRE(run("corpus --rules 120 --seed 3 --out " + corpus).status == 0);
    CHECK(run("corpus --rules 120 --seed 3").out == slurp(corpus));

    auto csv = (dir / "ds.csv").string();
    auto lab = run("label " + corpus + " --out " + csv + " --cost work --jobs 2 --seed 1");
    REQUIRE(lab.status == 0);
    CHECK(lab.out.find("decomp: ") == 0);
    CHECK(lab.out.find("total: ") != std::string::npos);
    CHECK(slurp(csv).rfind("f1,f2,f3,f4,f5,f6,label\n", 0) == 0);
    auto meta = slurp(csv + ".meta");
    CHECK(meta.find("oracle=internal cost=work") == 0);
    CHECK(meta.find("row 0 rule=") != std::string::npos);

    auto csv1 = (dir / "ds1.csv").string();
    REQUIRE(run("label " + corpus + " --out " + csv1 + " --cost work --jobs 1 --seed 1").status == 0);
    CHECK(slurp(csv1) == slurp(csv));

    auto model = (dir / "model.txt").string();
    auto kv = (dir / "report.kv").string();
    auto tr = run("train " + csv + " --out " + model + " --epochs 50 --seed 2 --report-kv " + kv);
    REQUIRE(tr.status == 0);
    CHECK(tr.out.find("train ") == 0);
    CHECK(tr.out.find("macro") != std::string::npos);
    CHECK(slurp(kv).find("macro.f1=") != std::string::npos);

    auto ev = run("eval " + model + " " + csv + " --kv");
    CHECK(ev.status == 0);
    CHECK(ev.out.find("accuracy=") != std::string::npos);

    auto pr = run("predict " + model + " " + csv);
    CHECK(pr.status == 0);
    CHECK(pr.out.rfind("index,label,p_decomp,p_do_not_decomp,p_indifferent\n1,", 0) == 0);
    auto prl = run("predict " + model + " " + kR1);
    CHECK(prl.status == 0);

    auto rw = run("rewrite " + corpus + " --policy model --model " + model);
    CHECK(rw.status == 0);
    auto ann = run("rewrite " + corpus + " --policy model --model " + model + " --annotate-only");
    std::size_t decompose = 0, lines = 0;
    std::istringstream is(ann.out);
    for (std::string line; std::getline(is, line); ++lines)
        decompose += line.find("decompose") != std::string::npos;
    CHECK(lines == 120);
    CHECK((decompose > 0) == (rw.out.find("fresh_pred_") != std::string::npos));
}

TEST_CASE("model and dataset errors") {
    auto dir = scratch();
    auto single = put("single.csv", "f1,f2,f3,f4,f5,f6,label\n1,2,3,4,5,6,decomp\n2,3,4,5,6,7,decomp\n");
    auto tr = run("train " + single.string() + " --out " + (dir / "m.txt").string());
    CHECK(tr.status == 1);
    CHECK(tr.err.find("error: DegenerateDatasetError:") != std::string::npos);

    auto junk = put("junk_model.txt", "hello\n");
    auto ev = run("eval " + junk.string() + " " + single.string());
    CHECK(ev.status == 2);
    CHECK(ev.err.find("error: ModelFormatError:") != std::string::npos);

    auto ds = put("three.csv", "f1,f2,f3,f4,f5,f6,label\n1,2,3,4,5,6,decomp\n9,9,9,9,9,9,do-not-decomp\n"
                               "5,5,5,5,5,5,indifferent\n1,2,3,4,5,7,decomp\n9,9,9,9,9,8,do-not-decomp\n"
                               "5,5,5,5,5,4,indifferent\n");
    auto model = (dir / "tiny.txt").string();
    REQUIRE(run("train " + ds.string() + " --out " + model + " --epochs 2 --split 0.5").status == 0);
    auto one = run("eval " + model + " " + single.string());
    CHECK(one.status == 1);
    CHECK(one.err.find("error: DegenerateDatasetError:") != std::string::npos);

    auto text = slurp(model);
    auto truncated = put("truncated.txt", text.substr(0, text.size() / 2));
    auto t = run("rewrite " + kR1 + " --policy model --model " + truncated.string());
    CHECK(t.status == 2);
    CHECK(t.err.find("error: ChecksumMismatch:") != std::string::npos);

    auto fails = run("label " + kR1 + " --out " + (dir / "x.csv").string() + " --oracle 'exec:false {file}'");
    CHECK(fails.status == 3);
    CHECK(fails.err.find("error: OracleError:") != std::string::npos);
}

TEST_CASE("external oracle labels through a shell command") {
    auto dir = scratch();
    auto out = (dir / "ext.csv").string();
    auto r = run("label " + kR1 + " --out " + out + " --oracle 'exec:cat {file} >/dev/null' --reps 1 --facts 5");
    CHECK(r.status == 0);
    CHECK(r.out.find("total: 1\n") != std::string::npos);
}
