//! Exercises the C entry points from Rust.

use std::ffi::CStr;

use hlu_ffi::*;

fn poisson2d_coo(nx: usize) -> (usize, Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = nx * nx;
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let id = |x: usize, y: usize| x + nx * y;
    for y in 0..nx {
        for x in 0..nx {
            let i = id(x, y);
            rows.push(i);
            cols.push(i);
            vals.push(4.0);
            for (dx, dy) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let (nx2, ny2) = (x as isize + dx, y as isize + dy);
                if nx2 >= 0 && ny2 >= 0 && (nx2 as usize) < nx && (ny2 as usize) < nx {
                    rows.push(i);
                    cols.push(id(nx2 as usize, ny2 as usize));
                    vals.push(-1.0);
                }
            }
        }
    }
    (n, rows, cols, vals)
}

#[test]
fn coo_factorize_solve_round_trip() {
    let (n, rows, cols, vals) = poisson2d_coo(16);
    unsafe {
        let mut matrix: *mut HluMatrix = std::ptr::null_mut();
        let status = hlu_matrix_from_coo(
            n,
            rows.len(),
            rows.as_ptr(),
            cols.as_ptr(),
            vals.as_ptr(),
            &mut matrix,
        );
        assert_eq!(status, HluStatus::Ok);
        assert_eq!(hlu_matrix_n(matrix), n);

        let mut fact: *mut HluFactorization = std::ptr::null_mut();
        let status = hlu_factorize(matrix, 1e-10, 0, 16, 0, &mut fact);
        assert_eq!(status, HluStatus::Ok);

        // manufactured rhs: b = A x_true with x_true = (1, 1, ..., 1)
        let x_true = vec![1.0; n];
        let mut b = vec![0.0; n];
        for ((&r, &c), &v) in rows.iter().zip(&cols).zip(&vals) {
            b[r] += v * x_true[c];
        }
        let mut x = vec![0.0; n];
        let status = hlu_solve(fact, b.as_ptr(), x.as_mut_ptr(), n);
        assert_eq!(status, HluStatus::Ok);
        let err: f64 = x
            .iter()
            .zip(&x_true)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-6, "solve error {err}");

        let stats = hlu_stats_json(fact);
        assert!(!stats.is_null());
        let text = CStr::from_ptr(stats).to_str().unwrap().to_string();
        hlu_string_free(stats);
        assert!(text.contains("\"levels\""));

        hlu_factorization_free(fact);
        hlu_matrix_free(matrix);
    }
}

#[test]
fn gmres_with_loose_preconditioner() {
    let (n, rows, cols, vals) = poisson2d_coo(20);
    unsafe {
        let mut matrix: *mut HluMatrix = std::ptr::null_mut();
        assert_eq!(
            hlu_matrix_from_coo(n, rows.len(), rows.as_ptr(), cols.as_ptr(), vals.as_ptr(), &mut matrix),
            HluStatus::Ok
        );
        let mut fact: *mut HluFactorization = std::ptr::null_mut();
        assert_eq!(hlu_factorize(matrix, 1e-2, 0, 16, 0, &mut fact), HluStatus::Ok);

        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let mut iters = 0usize;
        let status = hlu_gmres(matrix, fact, b.as_ptr(), x.as_mut_ptr(), n, 1e-12, 200, &mut iters);
        assert_eq!(status, HluStatus::Ok);
        assert!(iters > 0 && iters <= 60, "{iters} iterations");
        // residual check against the coo data
        let mut ax = vec![0.0; n];
        for ((&r, &c), &v) in rows.iter().zip(&cols).zip(&vals) {
            ax[r] += v * x[c];
        }
        let res: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(res < 1e-8, "residual {res}");

        // non-convergence is a distinct status
        let status = hlu_gmres(matrix, fact, b.as_ptr(), x.as_mut_ptr(), n, 1e-14, 1, &mut iters);
        assert_eq!(status, HluStatus::NotConverged);
        assert!(!hlu_last_error_message().is_null());

        hlu_factorization_free(fact);
        hlu_matrix_free(matrix);
    }
}

#[test]
fn error_paths_set_messages() {
    unsafe {
        let mut matrix: *mut HluMatrix = std::ptr::null_mut();
        // out-of-range entry
        let rows = [9usize];
        let cols = [0usize];
        let vals = [1.0f64];
        let status = hlu_matrix_from_coo(2, 1, rows.as_ptr(), cols.as_ptr(), vals.as_ptr(), &mut matrix);
        assert_eq!(status, HluStatus::InvalidArgument);
        let msg = CStr::from_ptr(hlu_last_error_message()).to_str().unwrap();
        assert!(msg.contains("outside"), "message was: {msg}");

        // missing file
        let path = std::ffi::CString::new("/nonexistent/hlu.mtx").unwrap();
        let status = hlu_matrix_from_mtx(path.as_ptr(), &mut matrix);
        assert_eq!(status, HluStatus::ParseError);

        // null output pointer
        let status = hlu_matrix_from_coo(
            1,
            0,
            std::ptr::null(),
            std::ptr::null(),
            std::ptr::null(),
            std::ptr::null_mut(),
        );
        assert_eq!(status, HluStatus::InvalidArgument);
    }
}

#[test]
fn singular_matrix_reports_singular_pivot() {
    unsafe {
        // 2x2 zero diagonal with no off-diagonal coupling in one block
        let rows = [0usize, 1];
        let cols = [0usize, 1];
        let vals = [0.0f64, 0.0];
        let mut matrix: *mut HluMatrix = std::ptr::null_mut();
        assert_eq!(
            hlu_matrix_from_coo(2, 2, rows.as_ptr(), cols.as_ptr(), vals.as_ptr(), &mut matrix),
            HluStatus::Ok
        );
        let mut fact: *mut HluFactorization = std::ptr::null_mut();
        let status = hlu_factorize(matrix, 1e-4, 0, 1, 0, &mut fact);
        assert_eq!(status, HluStatus::SingularPivot);
        hlu_matrix_free(matrix);
    }
}
