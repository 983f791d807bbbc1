//! The command-line surface: sample files, exit codes, output formats.

use lambda_forge::cli::{parse_document, print_document, run};
use std::path::PathBuf;
use std::process::Command;

fn sample(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("samples").join(name)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lambda-forge"));
    c.env_remove("LAMBDA_FORGE_THREADS");
    c
}

fn run_in_process(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["lambda-forge"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_tmp(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lambda-forge-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn samples_round_trip() {
    for name in ["virasoro.lca", "sl2.liealg", "sl3.liealg", "gfz.pva"] {
        let text = std::fs::read_to_string(sample(name)).unwrap();
        let doc = parse_document(&text, true).unwrap();
        let printed = print_document(&doc);
        let again = parse_document(&printed, true).unwrap();
        assert_eq!(again, doc, "{name}");
        assert_eq!(print_document(&again), printed, "{name}");
    }
}

#[test]
fn sample_contents() {
    let doc = parse_document(&std::fs::read_to_string(sample("virasoro.lca")).unwrap(), true).unwrap();
    let lca = doc.lca.unwrap();
    assert_eq!(lca.reg.len(), 1);
    assert_eq!(lca.reg.name(0), "L");
    assert_eq!(lca.reg.get(0).delta.to_string(), "2");
    let sl2 = parse_document(&std::fs::read_to_string(sample("sl2.liealg")).unwrap(), true).unwrap();
    assert_eq!(sl2.liealg.unwrap().dim(), 3);
}

#[test]
fn check_exit_codes() {
    let ok = bin().arg("check").arg(sample("virasoro.lca")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    // [h lam e] = e breaks Jacobi on (h, e, f)
    let bad = write_tmp(
        "corrupt.lca",
        "[lca]\ngen e even 1\ngen h even 1\ngen f even 1\n\
         bracket h e = e\nbracket e f = h\nbracket h f = -2*f\n",
    );
    let out = bin().arg("check").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL jacobi (e, h, f)") || text.contains("FAIL jacobi (h, e, f)"), "{text}");

    let broken = write_tmp("broken.lca", "[lca]\ngen L even 2\nbracket L L = T(L +\n");
    let out = bin().arg("check").arg(&broken).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 3"));

    let grading = write_tmp("grading.lca", "[lca]\ngen a even 1 charge=1\nbracket a a = :a a:\n");
    assert_eq!(bin().arg("check").arg(&grading).output().unwrap().status.code(), Some(2));

    assert_eq!(bin().arg("check").arg("/nonexistent/file.lca").output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn ope_and_normal_form() {
    let v = sample("virasoro.lca");
    let v = v.to_str().unwrap();
    let (code, out, _) = run_in_process(&["ope", v, "L", "L"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "T(L) + 2*lam*L + 1/12*c*lam^3*|0>");
    let (code, out, _) = run_in_process(&["-p", "c=1/2", "ope", v, "L", "L"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "T(L) + 2*lam*L + 1/24*lam^3*|0>");
}

#[test]
fn walg_generators_certificate() {
    let (code, out, _) = run_in_process(&["walg", "generators", "--algebra", "sl2", "--maxdelta", "2"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().filter(|l| l.starts_with("E")).collect();
    assert_eq!(lines.len(), 1, "{out}");
    assert!(out.contains("d(E1) = 0"), "{out}");
}

#[test]
fn pva_flow_prints_kdv() {
    let out = bin().args(["pva", "flow", "--builtin", "gfz", "--h", "h2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.trim_end().ends_with("3*u*u' + u'''")), "{text}");

    let file = sample("gfz.pva");
    let (code, from_file, _) = run_in_process(&["pva", "flow", file.to_str().unwrap(), "--h", "h2"]);
    assert_eq!(code, 0);
    assert_eq!(from_file, text);
}

#[test]
fn pva_involution_exit_codes() {
    let (code, _, _) = run_in_process(&["pva", "involution", "--builtin", "gfz", "--h", "h1", "--g", "h2"]);
    assert_eq!(code, 0);
    let (code, out, _) = run_in_process(&["pva", "involution", "--builtin", "gfz", "--h", "u^3", "--g", "u'^2"]);
    assert_eq!(code, 1);
    assert!(out.contains("6*u'^3"), "{out}");
}

#[test]
fn machine_output_shape() {
    let (code, out, _) = run_in_process(&["--machine", "pva", "flow", "--builtin", "gfz", "--h", "h2"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["format"], "lambda-forge");
    assert_eq!(v["version"], 1);
    assert_eq!(v["command"], "pva flow");
    assert_eq!(v["status"], "ok");
    let flow = v["result"]["flow"]["u"].as_array().unwrap();
    assert_eq!(flow.len(), 2);
    // each term is [scalar, monomial]
    assert_eq!(flow[0][0], "3");
    assert_eq!(flow[0][1], serde_json::json!([["u", 0], ["u", 1]]));
    assert_eq!(flow[1], serde_json::json!(["1", [["u", 3]]]));

    let v = sample("virasoro.lca");
    let (code, out, _) = run_in_process(&["--machine", "ope", v.to_str().unwrap(), "L", "L"]);
    assert_eq!(code, 0);
    let j: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(j["command"], "ope");

    // deterministic
    let (_, again, _) = run_in_process(&["--machine", "ope", v.to_str().unwrap(), "L", "L"]);
    assert_eq!(out, again);
}

#[test]
fn thread_variable_is_validated() {
    for bad in ["0", "-3", "many"] {
        let out = bin().env("LAMBDA_FORGE_THREADS", bad).arg("check").arg(sample("virasoro.lca")).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(String::from_utf8(out.stderr).unwrap().contains("LAMBDA_FORGE_THREADS"));
    }
    let out = bin().env("LAMBDA_FORGE_THREADS", "2").arg("check").arg(sample("virasoro.lca")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn zhu_and_dirac_commands() {
    let sl2 = sample("sl2.liealg");
    let (code, _, err) = run_in_process(&["zhu", "commutator", sl2.to_str().unwrap(), "e", "f"]);
    assert_eq!(code, 2, "a [liealg] file has no lca section: {err}");
    let (code, out, _) = run_in_process(&["dirac", "--algebra", "sl2"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("1/16"), "{out}");
}
